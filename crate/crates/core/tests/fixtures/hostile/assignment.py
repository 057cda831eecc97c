x = 1
Grasp('left')
