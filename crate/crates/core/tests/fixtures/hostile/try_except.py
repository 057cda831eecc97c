try:
    Grasp('left')
except:
    pass
