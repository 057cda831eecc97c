Grasp('left', 'plug', 50 + 50)
